from polymer_subdiffusion.io_cli.cli import main

if __name__ == '__main__':
    main()
